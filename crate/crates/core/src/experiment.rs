//! Repeated solver runs from random starts, summarized as mean and standard
//! deviation of iteration counts per algorithm.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::PopulationGame;
use crate::par::{map_indexed, sub_seed, Execution};
use crate::scenarios::random_simplex_point;
use crate::solvers::{
    better_response_solve, projection_solve, BetterResponseConfig, ProjectionConfig,
    RedistributionPolicy, Status,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Projection,
    BetterResponse,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Projection => "projection",
            Algorithm::BetterResponse => "better-response",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub repetitions: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub projection: ProjectionConfig,
    pub policy: RedistributionPolicy,
    pub better_response: BetterResponseConfig,
    #[serde(skip)]
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub run: usize,
    pub status: Status,
    pub iterations: usize,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub converged: usize,
    pub mean_iterations: f64,
    /// Sample standard deviation (zero for a single run).
    pub std_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<Summary>,
}

/// Runs every algorithm from the same random start for each repetition.
/// Run `r` starts from a point seeded by `sub_seed(seed, r)`, so any single
/// repetition can be replayed on its own.
pub fn run_experiment(game: &PopulationGame, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidSpec("repetitions must be positive".into()));
    }
    let mut projection = cfg.projection;
    projection.record_trajectory = false;
    let mut better = cfg.better_response;
    better.record_trajectory = false;

    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for &algorithm in &cfg.algorithms {
        let outcomes = map_indexed(cfg.execution, cfg.repetitions, |r| {
            let x0 = random_simplex_point(sub_seed(cfg.seed, r as u64), game.n(), game.gamma());
            let result = match algorithm {
                Algorithm::Projection => projection_solve(game, &x0, &projection)?,
                Algorithm::BetterResponse => better_response_solve(game, &x0, &cfg.policy, &better)?,
            };
            Ok(RunRecord {
                algorithm,
                run: r,
                status: result.status,
                iterations: result.iterations,
                verified: result.verified,
            })
        });
        let records = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        summaries.push(summarize(algorithm, &records));
        runs.extend(records);
    }
    Ok(ExperimentReport { runs, summaries })
}

fn summarize(algorithm: Algorithm, records: &[RunRecord]) -> Summary {
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.iterations as f64).sum::<f64>() / n;
    let var = if records.len() > 1 {
        records
            .iter()
            .map(|r| (r.iterations as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    Summary {
        algorithm,
        runs: records.len(),
        converged: records.iter().filter(|r| r.status == Status::Converged).count(),
        mean_iterations: mean,
        std_iterations: var.sqrt(),
    }
}

/// Per-run rows followed by one summary row per algorithm.
pub fn write_experiment_csv<W: Write>(writer: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "row", "algorithm", "run", "status", "iterations", "verified", "converged", "mean", "std",
    ])?;
    for r in &report.runs {
        w.write_record([
            "run",
            r.algorithm.name(),
            &r.run.to_string(),
            &r.status.to_string(),
            &r.iterations.to_string(),
            &r.verified.to_string(),
            "",
            "",
            "",
        ])?;
    }
    for s in &report.summaries {
        w.write_record([
            "summary",
            s.algorithm.name(),
            &s.runs.to_string(),
            "",
            "",
            "",
            &s.converged.to_string(),
            &s.mean_iterations.to_string(),
            &s.std_iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
