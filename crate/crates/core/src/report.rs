//! Comparison tables across methods and problems, and budget curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{best_record, ArchiveError, RunArchive};
use crate::budget::BudgetUnit;
use crate::model::{equal_scores, matches_or_exceeds, Direction};
use crate::stats::{iid_curve, scs_curve, trials_from_archive, CostModel, CurvePoint, IidSample, StatsError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no inputs")]
    Empty,
    #[error("problem `{problem}` appears as both {a} and {b}")]
    MixedDirections { problem: String, a: Direction, b: Direction },
    #[error("method `{method}` has two scores for problem `{problem}`")]
    Duplicate { problem: String, method: String },
    #[error("score CSV: {0}")]
    Csv(String),
    #[error("archive for method `{0}` has no successful candidate")]
    NoSolution(String),
    #[error("no curve estimator for engine `{0}`")]
    Engine(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One method's best score on one problem, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub problem: String,
    pub direction: Direction,
    pub method: String,
    pub score: f64,
    /// Archive record id, or the CSV row the score was read from.
    pub source: String,
}

impl ScoreEntry {
    /// Best record of an archive, optionally within a budget prefix.
    pub fn from_archive(
        method: &str,
        archive: &RunArchive,
        budget: Option<(BudgetUnit, f64)>,
    ) -> Result<Self, ReportError> {
        let records = match budget {
            Some((unit, cap)) => archive.budget_prefix(unit, cap)?,
            None => &archive.records[..],
        };
        let best = best_record(records, archive.direction())?
            .ok_or_else(|| ReportError::NoSolution(method.to_string()))?;
        Ok(Self {
            problem: archive.header.problem.name.clone(),
            direction: archive.direction(),
            method: method.to_string(),
            score: best.score().expect("best record succeeded"),
            source: best.id.clone(),
        })
    }

    /// Rows of `problem,direction,method,score` (header required).
    pub fn from_csv(reader: impl Read, name: &str) -> Result<Vec<Self>, ReportError> {
        #[derive(Deserialize)]
        struct Row {
            problem: String,
            direction: String,
            method: String,
            score: f64,
        }
        let mut out = Vec::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| ReportError::Csv(format!("{name} row {}: {e}", i + 1)))?;
            let direction = row
                .direction
                .parse()
                .map_err(|e| ReportError::Csv(format!("{name} row {}: {e}", i + 1)))?;
            if !row.score.is_finite() {
                return Err(ReportError::Csv(format!("{name} row {}: score must be finite", i + 1)));
            }
            out.push(Self {
                problem: row.problem,
                direction,
                method: row.method,
                score: row.score,
                source: format!("{name}:{}", i + 2),
            });
        }
        Ok(out)
    }
}

/// Best scores per problem and method, with head-to-head counts and ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub problems: Vec<(String, Direction)>,
    pub methods: Vec<String>,
    /// Methods shown for reference but left out of ranking and best markers.
    pub unranked: Vec<String>,
    pub entries: BTreeMap<String, BTreeMap<String, ScoreEntry>>,
}

/// A method's record against a reference method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCount {
    pub matched: usize,
    /// Problems where both methods have a score.
    pub compared: usize,
}

impl ReportTable {
    pub fn build(entries: Vec<ScoreEntry>, unranked: &[String]) -> Result<Self, ReportError> {
        if entries.is_empty() {
            return Err(ReportError::Empty);
        }
        let mut problems: Vec<(String, Direction)> = Vec::new();
        let mut methods: Vec<String> = Vec::new();
        let mut cells: BTreeMap<String, BTreeMap<String, ScoreEntry>> = BTreeMap::new();
        for e in entries {
            match problems.iter().find(|(p, _)| *p == e.problem) {
                Some((_, d)) if *d != e.direction => {
                    return Err(ReportError::MixedDirections {
                        problem: e.problem,
                        a: *d,
                        b: e.direction,
                    })
                }
                Some(_) => {}
                None => problems.push((e.problem.clone(), e.direction)),
            }
            if !methods.contains(&e.method) {
                methods.push(e.method.clone());
            }
            let row = cells.entry(e.problem.clone()).or_default();
            if row.contains_key(&e.method) {
                return Err(ReportError::Duplicate {
                    problem: e.problem,
                    method: e.method,
                });
            }
            row.insert(e.method.clone(), e);
        }
        Ok(Self {
            problems,
            methods,
            unranked: unranked.to_vec(),
            entries: cells,
        })
    }

    fn score(&self, problem: &str, method: &str) -> Option<f64> {
        self.entries.get(problem)?.get(method).map(|e| e.score)
    }

    pub fn ranked_methods(&self) -> Vec<&String> {
        self.methods.iter().filter(|m| !self.unranked.contains(m)).collect()
    }

    /// Problems on which `method` matches or exceeds `reference`.
    pub fn match_count(&self, method: &str, reference: &str) -> MatchCount {
        let mut c = MatchCount { matched: 0, compared: 0 };
        for (p, d) in &self.problems {
            if let (Some(a), Some(b)) = (self.score(p, method), self.score(p, reference)) {
                c.compared += 1;
                if matches_or_exceeds(a, b, *d).expect("finite scores") {
                    c.matched += 1;
                }
            }
        }
        c
    }

    /// Rank positions (1 = best) of the ranked methods on one problem, tied
    /// methods sharing the mean of their positions. `None` when a ranked
    /// method has no score there.
    pub fn problem_ranks(&self, problem: &str) -> Option<Vec<f64>> {
        let (_, direction) = self.problems.iter().find(|(p, _)| p == problem)?;
        let ranked = self.ranked_methods();
        let scores: Vec<f64> = ranked.iter().map(|m| self.score(problem, m)).collect::<Option<_>>()?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| direction.orient(scores[b]).total_cmp(&direction.orient(scores[a])));
        let mut ranks = vec![0.0; scores.len()];
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && equal_scores(scores[order[end]], scores[order[start]]).expect("finite") {
                end += 1;
            }
            let shared = (start + 1 + end) as f64 / 2.0;
            for &i in &order[start..end] {
                ranks[i] = shared;
            }
            start = end;
        }
        Some(ranks)
    }

    /// Mean rank per ranked method over the problems every ranked method
    /// has a score for, with that problem count.
    pub fn average_ranks(&self) -> (Vec<(String, f64)>, usize) {
        let ranked = self.ranked_methods();
        let mut sums = vec![0.0; ranked.len()];
        let mut n = 0;
        for (p, _) in &self.problems {
            if let Some(r) = self.problem_ranks(p) {
                n += 1;
                sums.iter_mut().zip(r).for_each(|(s, r)| *s += r);
            }
        }
        let avg = ranked
            .into_iter()
            .zip(sums)
            .map(|(m, s)| (m.clone(), if n == 0 { f64::NAN } else { s / n as f64 }))
            .collect();
        (avg, n)
    }

    /// Plain-text table. Among ranked methods the best score on a problem is
    /// marked `*` and the second best `_`.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["problem".to_string(), "".to_string()];
        header.extend(self.methods.iter().cloned());
        rows.push(header);
        for (p, d) in &self.problems {
            let mut row = vec![p.clone(), d.arrow().to_string()];
            let ranks = self.problem_ranks(p);
            let ranked = self.ranked_methods();
            for m in &self.methods {
                let cell = match self.score(p, m) {
                    None => "-".to_string(),
                    Some(v) => {
                        let mark = ranks
                            .as_ref()
                            .and_then(|r| ranked.iter().position(|x| *x == m).map(|i| r[i]))
                            .map_or("", |r| marker(ranks.as_deref().unwrap_or_default(), r));
                        format!("{}{mark}", significant(v))
                    }
                };
                row.push(cell);
            }
            rows.push(row);
        }
        for reference in &self.methods {
            let mut row = vec![format!("# problems >= {reference}"), String::new()];
            for m in &self.methods {
                row.push(if m == reference {
                    String::new()
                } else {
                    let c = self.match_count(m, reference);
                    format!("{}/{}", c.matched, c.compared)
                });
            }
            rows.push(row);
        }
        let (avg, n) = self.average_ranks();
        let mut row = vec![format!("average rank ({n} problems)"), String::new()];
        for m in &self.methods {
            row.push(avg.iter().find(|(x, _)| x == m).map_or(String::new(), |(_, r)| format!("{r:.2}")));
        }
        rows.push(row);

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).expect("write to string");
        }
        out
    }

    /// `problem,direction,method,score,source` rows in table order.
    pub fn write_scores_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["problem", "direction", "method", "score", "source"])?;
        for (p, d) in &self.problems {
            for m in &self.methods {
                if let Some(e) = self.entries.get(p).and_then(|r| r.get(m)) {
                    w.write_record([p.as_str(), &d.to_string(), m, &e.score.to_string(), &e.source])?;
                }
            }
        }
        w.flush()
    }
}

fn marker(ranks: &[f64], rank: f64) -> &'static str {
    let mut distinct = ranks.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.first() == Some(&rank) {
        "*"
    } else if distinct.get(1) == Some(&rank) {
        "_"
    } else {
        ""
    }
}

/// Six significant digits without trailing zeros.
pub fn significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// How budget curves are sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    pub unit: BudgetUnit,
    /// Largest budget; defaults to the archive's total spend.
    pub max_budget: Option<f64>,
    pub points: usize,
    pub cost_model: CostModel,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            unit: BudgetUnit::Dollars,
            max_budget: None,
            points: 20,
            cost_model: CostModel::Average,
            resamples: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// A curve row tagged with its problem and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub problem: String,
    pub method: String,
    pub target: f64,
    pub point: CurvePoint,
}

/// Probability that the archive's engine matches or exceeds `target` at
/// evenly spaced budgets up to the maximum.
pub fn archive_curve(
    method: &str,
    archive: &RunArchive,
    target: f64,
    cfg: &CurveConfig,
) -> Result<Vec<CurveRow>, ReportError> {
    if cfg.points == 0 {
        return Err(StatsError::Invalid("at least one curve point is needed".into()).into());
    }
    let max = match cfg.max_budget {
        Some(b) => b,
        None => archive.total_spend(cfg.unit)?,
    };
    let budgets: Vec<f64> = (1..=cfg.points).map(|i| max * i as f64 / cfg.points as f64).collect();
    let direction = archive.direction();
    let points = match archive.header.engine.as_str() {
        "iid" => {
            let samples = IidSample::from_archive(archive, cfg.unit)?;
            iid_curve(
                &samples,
                target,
                direction,
                &budgets,
                cfg.cost_model,
                cfg.resamples,
                cfg.level,
                cfg.seed,
            )?
        }
        "scs" => {
            let set = trials_from_archive(archive, cfg.unit, target)?;
            scs_curve(&set, &budgets, cfg.resamples, cfg.level, cfg.seed)?
        }
        other => return Err(ReportError::Engine(other.to_string())),
    };
    Ok(points
        .into_iter()
        .map(|point| CurveRow {
            problem: archive.header.problem.name.clone(),
            method: method.to_string(),
            target,
            point,
        })
        .collect())
}

/// `problem,method,target,budget,probability,lo,hi` rows.
pub fn write_curves_csv(rows: &[CurveRow], out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "method", "target", "budget", "probability", "lo", "hi"])?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.method.clone(),
            r.target.to_string(),
            r.point.budget.to_string(),
            r.point.probability.to_string(),
            r.point.lo.to_string(),
            r.point.hi.to_string(),
        ])?;
    }
    w.flush()
}
