use std::path::PathBuf;

use clap::Args;
use evobase::archive::RunArchive;
use evobase::budget::BudgetUnit;
use evobase::report::{archive_curve, write_curves_csv, CurveConfig, ReportTable, ScoreEntry};
use evobase::stats::CostModel;

use crate::{domain, emit, read_input, usage, CmdResult, Global};

#[derive(Args)]
pub struct ReportArgs {
    /// Archive with the method name to report it under, as NAME=PATH.
    #[arg(long = "archive", value_parser = parse_named)]
    archives: Vec<(String, PathBuf)>,
    /// CSV of problem,direction,method,score rows from elsewhere.
    #[arg(long = "scores")]
    score_files: Vec<PathBuf>,
    /// Method shown in the table but left out of ranks and best markers.
    #[arg(long)]
    unranked: Vec<String>,
    /// Curve target: a fixed score for every problem.
    #[arg(long, conflicts_with = "target_method")]
    target: Option<f64>,
    /// Curve target: this method's best score on each problem.
    #[arg(long)]
    target_method: Option<String>,
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value = "average", value_parser = parse_cost_model)]
    cost_model: CostModel,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
    if name.is_empty() {
        return Err("method name is empty".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn parse_cost_model(s: &str) -> Result<CostModel, String> {
    match s {
        "average" => Ok(CostModel::Average),
        "actual" => Ok(CostModel::Actual),
        other => Err(format!("unknown cost model `{other}`")),
    }
}

pub fn cmd_report(g: &Global, a: ReportArgs) -> CmdResult {
    if a.archives.is_empty() && a.score_files.is_empty() {
        return Err(usage("give at least one --archive or --scores input"));
    }
    let unit = g.budget_unit.unwrap_or(BudgetUnit::Dollars);
    let prefix = g.budget.map(|cap| (unit, cap));
    let mut entries = Vec::new();
    let mut archives = Vec::new();
    for (name, path) in &a.archives {
        let archive = RunArchive::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        match ScoreEntry::from_archive(name, &archive, prefix) {
            Ok(e) => entries.push(e),
            Err(e) => eprintln!("warning: {e}; left out of the table"),
        }
        archives.push((name.clone(), archive));
    }
    for path in &a.score_files {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        entries.extend(ScoreEntry::from_csv(read_input(path)?.as_bytes(), &name).map_err(usage)?);
    }
    let table = ReportTable::build(entries, &a.unranked).map_err(domain)?;

    let cfg = CurveConfig {
        unit,
        max_budget: g.budget,
        points: a.points,
        cost_model: a.cost_model,
        resamples: a.resamples,
        level: a.level,
        seed: g.seed.unwrap_or(0),
    };
    let mut curves = Vec::new();
    if a.target.is_some() || a.target_method.is_some() {
        for (name, archive) in &archives {
            let problem = &archive.header.problem.name;
            let target = match (&a.target, &a.target_method) {
                (Some(t), _) => *t,
                (None, Some(m)) => match table.entries.get(problem).and_then(|r| r.get(m)) {
                    Some(e) => e.score,
                    None => {
                        eprintln!("warning: `{m}` has no score on {problem}; no curve for {name}");
                        continue;
                    }
                },
                (None, None) => unreachable!("checked above"),
            };
            curves.extend(archive_curve(name, archive, target, &cfg).map_err(domain)?);
        }
    }

    let text = table.to_text();
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    emit(Some(&dir.join("table.txt")), text.as_bytes())?;
    let mut scores = Vec::new();
    table.write_scores_csv(&mut scores).map_err(domain)?;
    emit(Some(&dir.join("scores.csv")), &scores)?;
    if !curves.is_empty() {
        let mut buf = Vec::new();
        write_curves_csv(&curves, &mut buf).map_err(domain)?;
        emit(Some(&dir.join("curves.csv")), &buf)?;
    }
    print!("{text}");
    Ok(())
}
