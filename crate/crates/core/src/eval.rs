//! Accuracy and teaching-time metrics, and the scenario driver that produces
//! one report per run.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::border::BorderKind;
use crate::fsm::BorderRecord;
use crate::grid::{CellCoord, CellValue, OccupancyGrid, WorldPoint};
use crate::nav::{path_intersects, plan_path, PlannedPath};
use crate::scenario::{LoadedScenario, PlanExpectation, PlanSpec, ScriptRunner};
use crate::sim::{FailureRecord, Simulation};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("jaccard index is undefined for two empty sets")]
pub struct UndefinedIndex;

/// `|GT ∩ UD| / |GT ∪ UD|`.
pub fn jaccard(gt: &BTreeSet<CellCoord>, ud: &BTreeSet<CellCoord>) -> Result<f64, UndefinedIndex> {
    let inter = gt.intersection(ud).count();
    let union = gt.len() + ud.len() - inter;
    if union == 0 {
        return Err(UndefinedIndex);
    }
    Ok(inter as f64 / union as f64)
}

/// Cells Occupied in `map` but Free in `prior`: the virtual areas.
pub fn virtual_cells(map: &OccupancyGrid, prior: &OccupancyGrid) -> BTreeSet<CellCoord> {
    map.coords()
        .filter(|&c| map.at(c) == CellValue::Occupied && prior.at(c) == CellValue::Free)
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, have {0}")]
    TooFewPoints(usize),
    #[error("all lengths are equal")]
    DegenerateFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// s/m
    pub slope: f64,
    /// s
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LinearFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 1e-12 * (1.0 + mx * mx) {
        return Err(FitError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Teaching time against border length over the reports.
pub fn fit_time_length(reports: &[ScenarioReport]) -> Result<LinearFit, FitError> {
    let points: Vec<_> = reports
        .iter()
        .map(|r| (r.border_length, r.teaching_time))
        .collect();
    fit_line(&points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub steps: usize,
    pub length: f64,
    /// Indices of the taught keep-off areas the path enters.
    pub enters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub name: String,
    pub start: WorldPoint,
    pub goal: WorldPoint,
    /// `None` when no path exists.
    pub before: Option<PathSummary>,
    pub after: Option<PathSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<PlanExpectation>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub id: String,
    pub seed: u64,
    /// Against the ground-truth map; absent without one or when undefined.
    pub jaccard: Option<f64>,
    /// Total time spent in Record over all finalized borders (s).
    pub teaching_time: f64,
    /// Total length of all finalized borders (m).
    pub border_length: f64,
    /// Kind of the last finalized border.
    pub border_kind: Option<BorderKind>,
    pub borders: Vec<BorderRecord>,
    pub failures: Vec<FailureRecord>,
    pub ticks: u64,
    pub sim_time: f64,
    pub collisions: usize,
    pub plans: Vec<PlanReport>,
    pub criteria: BTreeMap<String, bool>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub posterior: OccupancyGrid,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run options: {0}")]
    Options(String),
    #[error("cannot write session log: {0}")]
    Log(#[from] io::Error),
}

/// Executes the scenario's scripts through the closed loop until every
/// scripted event has been applied or the time limit is reached. Each tick
/// record is written to `log` as one JSON line.
pub fn run_scenario(
    scenario: &LoadedScenario,
    options: &RunOptions,
    mut log: Option<&mut dyn Write>,
) -> Result<ScenarioRun, RunError> {
    let file = &scenario.file;
    let seed = options.seed.unwrap_or(file.seed);
    let mut sim_config = file.sim.clone();
    if let Some(dt) = options.dt {
        sim_config.dt = dt;
    }
    sim_config.validate().map_err(RunError::Options)?;
    let max_time = sim_config.max_time;
    let mut sim = Simulation::new(scenario.setup(seed, sim_config));
    let mut runner = ScriptRunner::new(
        file.laser_script.clone(),
        file.event_script.clone(),
        scenario.prior.clone(),
    );
    let mut timed_out = false;
    loop {
        if sim.time() >= max_time - 1e-9 {
            timed_out = !runner.finished();
            break;
        }
        runner.before_tick(&mut sim);
        let record = sim.step();
        if let Some(out) = log.as_mut() {
            serde_json::to_writer(&mut *out, &record).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        if runner.finished() {
            break;
        }
    }
    if timed_out {
        log::warn!("{}: script incomplete at t={:.2}", file.id, sim.time());
    }
    Ok(summarize(scenario, seed, &sim, timed_out))
}

/// Report for a simulation driven from outside the scenario's scripts.
pub fn session_report(scenario: &LoadedScenario, seed: u64, sim: &Simulation) -> ScenarioRun {
    summarize(scenario, seed, sim, false)
}

fn summarize(
    scenario: &LoadedScenario,
    seed: u64,
    sim: &Simulation,
    timed_out: bool,
) -> ScenarioRun {
    let file = &scenario.file;
    let prior = &scenario.prior;
    let posterior = sim.map().clone();
    let borders: Vec<BorderRecord> = sim.finalized().iter().map(|f| f.record.clone()).collect();
    let regions: Vec<BTreeSet<CellCoord>> = sim
        .finalized()
        .iter()
        .map(|f| {
            f.partition
                .connected
                .union(&f.partition.border_cells)
                .copied()
                .collect()
        })
        .collect();
    let jaccard = scenario
        .ground_truth
        .as_ref()
        .and_then(|gt| jaccard(&virtual_cells(gt, prior), &virtual_cells(&posterior, prior)).ok());

    let mut failures = sim.failures().to_vec();
    if timed_out {
        failures.push(FailureRecord {
            time: sim.time(),
            kind: "script_timeout".into(),
            message: format!("scripted events incomplete after {:.2} s", sim.time()),
        });
    }

    let plans: Vec<PlanReport> = file
        .plans
        .iter()
        .map(|p| plan_report(p, prior, &posterior, &regions))
        .collect();

    let mut criteria = BTreeMap::new();
    criteria.insert("script_completed".to_string(), !timed_out);
    match &file.expect.failure {
        Some(kind) => criteria.insert(
            format!("failure_{kind}"),
            failures.iter().any(|f| &f.kind == kind),
        ),
        None => criteria.insert("no_failures".to_string(), failures.is_empty()),
    };
    if let Some(n) = file.expect.borders {
        criteria.insert("borders".to_string(), borders.len() == n);
    }
    if let Some(min) = file.expect.min_jaccard {
        criteria.insert("jaccard".to_string(), jaccard.is_some_and(|j| j >= min));
    }
    for p in &plans {
        if p.expect.is_some() {
            criteria.insert(format!("plan_{}", p.name), p.passed);
        }
    }
    let passed = criteria.values().all(|&v| v);

    let report = ScenarioReport {
        id: file.id.clone(),
        seed,
        jaccard,
        teaching_time: borders.iter().fold(0.0, |acc, b| acc + b.teaching_time),
        border_length: borders.iter().fold(0.0, |acc, b| acc + b.border_length),
        border_kind: borders.last().map(|b| b.summary.kind),
        borders,
        failures,
        ticks: sim.tick_index(),
        sim_time: sim.time(),
        collisions: sim.collisions(),
        plans,
        criteria,
        passed,
    };
    ScenarioRun { report, posterior }
}

fn summarize_path(path: &PlannedPath, regions: &[BTreeSet<CellCoord>]) -> PathSummary {
    PathSummary {
        steps: path.steps(),
        length: path.length,
        enters: (0..regions.len())
            .filter(|&i| path_intersects(path, &regions[i]))
            .collect(),
    }
}

fn plan_report(
    spec: &PlanSpec,
    prior: &OccupancyGrid,
    posterior: &OccupancyGrid,
    regions: &[BTreeSet<CellCoord>],
) -> PlanReport {
    let plan = |grid: &OccupancyGrid| {
        let start = grid.world_to_cell(spec.start).ok()?;
        let goal = grid.world_to_cell(spec.goal).ok()?;
        plan_path(grid, start, goal)
            .ok()
            .map(|p| summarize_path(&p, regions))
    };
    let before = plan(prior);
    let after = plan(posterior);
    let passed = match spec.expect {
        None => true,
        Some(PlanExpectation::Reroute) => {
            before.as_ref().is_some_and(|b| !b.enters.is_empty())
                && after.as_ref().is_some_and(|a| a.enters.is_empty())
        }
        Some(PlanExpectation::NoPath) => before.is_some() && after.is_none(),
    };
    PlanReport {
        name: spec.name.clone(),
        start: spec.start,
        goal: spec.goal,
        before,
        after,
        expect: spec.expect,
        passed,
    }
}
