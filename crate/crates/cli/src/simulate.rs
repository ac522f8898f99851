use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use evcs_ph::sim::{
    csv::to_csv, period_average_table, prepare, simulate_averaged, simulate_switched, tabulate, tabulate_switched,
    ModelKind, Prepared, Scenario, Table,
};

use crate::record::{sha256_hex, Certificates, RunRecord, SolverStats};
use crate::{CheckFailed, RunOpts};

/// Reads a scenario and applies command-line overrides.
pub fn load(path: &Path, opts: &RunOpts) -> anyhow::Result<Scenario> {
    let mut sc = Scenario::read(path).with_context(|| format!("scenario {}", path.display()))?;
    if let Some(f) = opts.fsw {
        sc.pwm.f_sw = f;
        sc.params.f_sw = f;
        sc.validate()?;
    }
    Ok(sc)
}

pub struct Output {
    pub table: Table,
    pub averaged: Option<Table>,
    pub solver: SolverStats,
}

pub fn execute(prep: &Prepared, sc: &Scenario) -> anyhow::Result<Output> {
    Ok(match sc.model {
        ModelKind::Averaged => {
            let run = simulate_averaged(prep, sc)?;
            let solver = SolverStats {
                accepted: Some(run.stats.accepted),
                rejected: Some(run.stats.rejected),
                rhs_evals: Some(run.stats.rhs_evals),
                steps: None,
            };
            Output { table: tabulate(prep, &run.times, &run.states, &sc.outputs)?, averaged: None, solver }
        }
        ModelKind::Switched => {
            let run = simulate_switched(prep, sc)?;
            let table = tabulate_switched(prep, &run, &sc.outputs)?;
            let averaged = Some(period_average_table(&table, sc.pwm.f_sw)?);
            Output { table, averaged, solver: SolverStats { steps: Some(run.steps), ..Default::default() } }
        }
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

pub fn run(path: &Path, opts: &RunOpts) -> anyhow::Result<RunRecord> {
    let sc = load(path, opts)?;
    let t0 = Instant::now();
    let prep = prepare(&sc)?;
    let out = execute(&prep, &sc)?;
    let csv = to_csv(&out.table);
    if opts.seedless {
        let again = to_csv(&execute(&prepare(&sc)?, &sc)?.table);
        if again != csv {
            return Err(CheckFailed(format!("{}: repeated run is not byte-identical", path.display())).into());
        }
    }
    let duration_s = t0.elapsed().as_secs_f64();
    std::fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let name = stem(path);
    let csv_name = format!("{name}.csv");
    write(&opts.out.join(&csv_name), &csv)?;
    let period_average_csv = match &out.averaged {
        Some(t) => {
            let n = format!("{name}.period_avg.csv");
            write(&opts.out.join(&n), &to_csv(t))?;
            Some(n)
        }
        None => None,
    };
    let record = RunRecord {
        scenario_hash: sc.hash(),
        scenario: sc.canonical(),
        csv: csv_name,
        csv_sha256: sha256_hex(csv.as_bytes()),
        period_average_csv,
        model: match sc.model {
            ModelKind::Averaged => "averaged".into(),
            ModelKind::Switched => "switched".into(),
        },
        controller: prep.controller.name().into(),
        samples: out.table.rows.len(),
        certificates: Certificates::of(&prep),
        solver: out.solver,
        duration_s,
    };
    record.write(&opts.out.join(format!("{name}.record.json")))?;
    Ok(record)
}

fn write(path: &PathBuf, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs every scenario on its own thread. Output names must not collide.
pub fn batch(paths: &[PathBuf], opts: &RunOpts) -> anyhow::Result<()> {
    let mut names: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CheckFailed(format!("two scenarios would both write '{}'", w[0])).into());
    }
    let results: Vec<anyhow::Result<RunRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> = paths.iter().map(|p| s.spawn(move || run(p, opts))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("worker panicked")))).collect()
    });
    let mut worst: Option<anyhow::Error> = None;
    for (p, r) in paths.iter().zip(results) {
        match r {
            Ok(rec) => println!("{}", rec.summary()),
            Err(e) => {
                eprintln!("{}: {e:#}", p.display());
                let code = crate::exit_code(&e);
                if worst.as_ref().is_none_or(|w| crate::exit_code(w) < code) {
                    worst = Some(e.context(format!("batch failed at {}", p.display())));
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}
