use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use borderforge::eval::{fit_time_length, run_scenario, RunOptions, ScenarioReport, ScenarioRun};
use borderforge::grid::save_map;
use borderforge::scenario::load_scenario;
use borderforge_server::protocol::Pace;
use borderforge_server::{router, Catalog, ServiceConfig};
use serde::Serialize;

use crate::{CliError, Verdict};

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

fn verdict(report: &ScenarioReport) -> Verdict {
    if report.passed {
        Verdict::Passed
    } else {
        Verdict::Failed
    }
}

fn describe(report: &ScenarioReport) -> String {
    let failed: Vec<_> = report
        .criteria
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(name, _)| name.as_str())
        .collect();
    let jaccard = report
        .jaccard
        .map_or_else(|| "n/a".to_string(), |j| format!("{j:.3}"));
    let mut line = format!(
        "{}: {} | borders {} | length {:.2} m | time {:.2} s | jaccard {jaccard}",
        report.id,
        if report.passed { "PASS" } else { "FAIL" },
        report.borders.len(),
        report.border_length,
        report.teaching_time,
    );
    if !failed.is_empty() {
        line.push_str(&format!(" | failed: {}", failed.join(", ")));
    }
    line
}

/// Loads and runs one scenario, writing its outputs under `out`.
fn run_into(
    scenario: &Path,
    out: &Path,
    options: &RunOptions,
    with_log: bool,
) -> Result<ScenarioRun, CliError> {
    let loaded = load_scenario(scenario)?;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let run = if with_log {
        let log_path = out.join("session.jsonl");
        let file = File::create(&log_path).map_err(CliError::io(&log_path))?;
        let mut log = BufWriter::new(file);
        let run = run_scenario(&loaded, options, Some(&mut log))?;
        log.flush().map_err(CliError::io(&log_path))?;
        run
    } else {
        run_scenario(&loaded, options, None)?
    };
    save_map(&run.posterior, out.join("posterior.pgm"))?;
    write_json(&out.join("report.json"), &run.report)?;
    Ok(run)
}

pub fn run(scenario: &Path, out: &Path, seed: Option<u64>, dt: Option<f64>) -> Result<Verdict, CliError> {
    let run = run_into(scenario, out, &RunOptions { seed, dt }, true)?;
    println!("{}", describe(&run.report));
    Ok(verdict(&run.report))
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    scenario: String,
    length: Option<f64>,
    time: Option<f64>,
    jaccard: Option<f64>,
    passed: bool,
    failures: String,
    error: String,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    points: usize,
    #[serde(flatten)]
    fit: Option<borderforge::eval::LinearFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let path = entry.map_err(CliError::io(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn eval(
    dir: &Path,
    out: &Path,
    seed: Option<u64>,
    dt: Option<f64>,
    jobs: Option<usize>,
) -> Result<Verdict, CliError> {
    let paths = scenario_files(dir)?;
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no scenario files in {}",
            dir.display()
        )));
    }
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let options = RunOptions { seed, dt };
    let workers = jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, paths.len());
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<ScenarioRun, CliError>>>> =
        paths.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let stem = path.file_stem().expect("json file has a stem");
                let result = run_into(path, &out.join(stem), &options, false);
                *results[i].lock().expect("result slot") = Some(result);
            });
        }
    });

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut errored = false;
    let mut failed = false;
    for (path, slot) in paths.iter().zip(results) {
        let result = slot.into_inner().expect("result slot").expect("every scenario ran");
        let stem = path.file_stem().expect("stem").to_string_lossy().into_owned();
        match result {
            Ok(run) => {
                let r = run.report;
                println!("{}", describe(&r));
                failed |= !r.passed;
                rows.push(SummaryRow {
                    scenario: r.id.clone(),
                    length: Some(r.border_length),
                    time: Some(r.teaching_time),
                    jaccard: r.jaccard,
                    passed: r.passed,
                    failures: r
                        .failures
                        .iter()
                        .map(|f| f.kind.as_str())
                        .collect::<Vec<_>>()
                        .join(";"),
                    error: String::new(),
                });
                reports.push(r);
            }
            Err(e) => {
                eprintln!("error: {e}");
                errored = true;
                rows.push(SummaryRow {
                    scenario: stem,
                    length: None,
                    time: None,
                    jaccard: None,
                    passed: false,
                    failures: String::new(),
                    error: e.to_string(),
                });
            }
        }
    }

    let csv_path = out.join("summary.csv");
    let csv_err = |source| CliError::Csv {
        path: csv_path.clone(),
        source,
    };
    let mut writer = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    for row in &rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(CliError::io(&csv_path))?;

    // Only runs that finalized a border carry a teaching time.
    let fitted: Vec<ScenarioReport> = reports
        .into_iter()
        .filter(|r| !r.borders.is_empty())
        .collect();
    let summary = match fit_time_length(&fitted) {
        Ok(fit) => {
            println!("fit over {} scenarios:", fitted.len());
            println!("  slope      {:.4} s/m", fit.slope);
            println!("  intercept  {:.4} s", fit.intercept);
            println!("  r_squared  {:.6}", fit.r_squared);
            FitSummary {
                points: fitted.len(),
                fit: Some(fit),
                error: None,
            }
        }
        Err(e) => {
            println!("fit unavailable: {e}");
            FitSummary {
                points: fitted.len(),
                fit: None,
                error: Some(e.to_string()),
            }
        }
    };
    write_json(&out.join("fit.json"), &summary)?;

    if errored {
        return Err(CliError::Usage(format!(
            "some scenarios in {} could not be run",
            dir.display()
        )));
    }
    Ok(if failed {
        Verdict::Failed
    } else {
        Verdict::Passed
    })
}

pub fn serve(dir: &Path, addr: SocketAddr, ticks_per_call: Option<u32>) -> Result<Verdict, CliError> {
    let catalog = Catalog::load_dir(dir)?;
    let config = match ticks_per_call {
        Some(0) => return Err(CliError::Usage("--headless-ticks-per-call must be positive".into())),
        Some(n) => ServiceConfig {
            default_pace: Pace::Lockstep,
            ticks_per_call: n,
        },
        None => ServiceConfig::default(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io("tokio runtime"))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(CliError::io(addr.to_string()))?;
        let bound = listener.local_addr().map_err(CliError::io(addr.to_string()))?;
        let maps: Vec<_> = catalog.ids().map(str::to_owned).collect();
        println!("listening on {bound} with maps: {}", maps.join(", "));
        borderforge_server::serve(listener, router(catalog, config))
            .await
            .map_err(CliError::io(bound.to_string()))
    })?;
    Ok(Verdict::Passed)
}
