use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use fairline_core::aoi;
use fairline_core::experiment::{self, Evaluated, SweepRow, SweepSpec};
use fairline_core::fairness;
use fairline_core::metrics::{self, Normalizer};
use fairline_core::moead::{self, OptimizerConfig};
use fairline_core::{Scenario, WindowVector};

use crate::output::{csv_writer, fmt, mean_std, numbered};
use crate::{Common, CompareArgs, EvalArgs, HvArgs, OptimizeArgs, OptimizerArgs, SweepArgs};

/// Bad user input caught by the CLI rather than the library.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub enum Status {
    Complete,
    /// Rows that failed while the rest of the sweep completed.
    Partial(usize),
}

#[derive(Debug, Clone, Copy)]
pub enum Sweep {
    Velocity,
    Vehicles,
}

fn load_scenario(common: &Common) -> Result<Scenario> {
    match &common.scenario {
        Some(path) => Ok(Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))?),
        None => Ok(Scenario::default_highway()),
    }
}

fn windows_for(args: &EvalArgs, scenario: &Scenario) -> Result<WindowVector> {
    let n = scenario.num_vehicles();
    let w = match &args.windows {
        Some(w) => WindowVector::new(w.clone()),
        None => WindowVector::uniform(n, args.baseline_window),
    };
    if w.len() != n {
        return Err(ConfigError(format!("--windows has {} entries but the scenario has {n} vehicles", w.len())).into());
    }
    Ok(w)
}

fn optimizer_config(args: &OptimizerArgs) -> OptimizerConfig {
    OptimizerConfig { generations: args.generations, rng_seed: args.seed, ..Default::default() }
}

pub fn aoi(args: EvalArgs) -> Result<Status> {
    let scenario = load_scenario(&args.common)?;
    let windows = windows_for(&args, &scenario)?;
    let rates = aoi::rate_set(&windows, &scenario)?;
    let sol = aoi::shs_solution(&rates)?;
    eprintln!("{:>4} {:>12} {:>12} {:>12} {:>10} {:>10}", "link", "H", "R", "sum_p", "pi", "delta");
    for k in 0..rates.len() {
        eprintln!(
            "{:>4} {:>12.4} {:>12.4} {:>12.4} {:>10.6} {:>10.6}",
            k + 1,
            rates.h[k],
            rates.r[k],
            rates.preemption_outflow(k),
            sol.pi[k + 1],
            sol.per_link_aoi[k]
        );
    }
    eprintln!("idle pi_0 = {:.6}, network AoI = {:.6} s", sol.pi[0], sol.network_aoi);

    let mut w = csv_writer(args.common.out.as_deref(), "aoi")?;
    w.write_record(["link", "H", "R", "sum_p", "pi", "delta"])?;
    for k in 0..rates.len() {
        w.write_record([
            (k + 1).to_string(),
            fmt(rates.h[k]),
            fmt(rates.r[k]),
            fmt(rates.preemption_outflow(k)),
            fmt(sol.pi[k + 1]),
            fmt(sol.per_link_aoi[k]),
        ])?;
    }
    w.flush()?;
    Ok(Status::Complete)
}

pub fn fairness(args: EvalArgs) -> Result<Status> {
    let scenario = load_scenario(&args.common)?;
    let windows = windows_for(&args, &scenario)?;
    let report = fairness::fairness_report(&windows, &scenario)?;
    eprintln!("network fairness index = {:.6}, max deviation = {:.6}", report.network_index, report.max_deviation());

    let mut w = csv_writer(args.common.out.as_deref(), "fairness")?;
    w.write_record(["vehicle", "w", "speed", "prr", "kindex", "deviation"])?;
    for i in 0..scenario.num_vehicles() {
        w.write_record([
            (i + 1).to_string(),
            fmt(windows[i]),
            fmt(scenario.vehicle(i).speed),
            fmt(report.per_vehicle_prr[i]),
            fmt(report.per_vehicle_index[i]),
            fmt(report.per_vehicle_deviation[i]),
        ])?;
    }
    w.flush()?;
    Ok(Status::Complete)
}

fn objective_header(n: usize) -> Vec<String> {
    numbered("w", n).chain(numbered("fk", n)).chain(["fage".to_string()]).collect()
}

pub fn optimize(args: OptimizeArgs) -> Result<Status> {
    let scenario = load_scenario(&args.common)?;
    let config = optimizer_config(&args.optimizer);
    let op = args.operator.build(config.rng_seed)?;
    let result = moead::run(&scenario, &config, op.as_ref(), |_| {})?;
    let n = scenario.num_vehicles();
    let out = args.common.out.as_deref();

    let mut w = csv_writer(out, "archive")?;
    w.write_record(objective_header(n))?;
    for s in result.archive.entries() {
        w.write_record(s.windows.as_slice().iter().chain(s.objectives.iter()).map(|x| fmt(*x)))?;
    }
    w.flush()?;

    let best = moead::select_solution(result.archive.entries())?;
    eprintln!(
        "{}: {} archive points, {} evaluations ({} infeasible)",
        args.operator,
        result.archive.len(),
        result.evaluations,
        result.infeasible
    );
    eprintln!(
        "selected w* = [{}], max F_K = {:.6}, F_age = {:.6}",
        best.windows.as_slice().iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", "),
        best.objectives.max_deviation(),
        best.objectives.age()
    );
    if out.is_some() {
        let mut w = csv_writer(out, "selected")?;
        w.write_record(objective_header(n))?;
        w.write_record(best.windows.as_slice().iter().chain(best.objectives.iter()).map(|x| fmt(*x)))?;
        w.flush()?;
    }
    Ok(Status::Complete)
}

fn sweep_spec(args: &SweepArgs, kind: Sweep) -> SweepSpec {
    let values = args.values.clone().unwrap_or_else(|| match kind {
        Sweep::Velocity => vec![20.0, 22.0, 24.0, 26.0, 28.0, 30.0],
        Sweep::Vehicles => (1..=6).map(f64::from).collect(),
    });
    SweepSpec {
        values,
        trials: args.trials,
        operators: args.operator.clone(),
        baseline_window: args.baseline_window,
        optimizer: optimizer_config(&args.optimizer),
        master_seed: args.optimizer.seed,
    }
}

pub fn sweep(args: SweepArgs, kind: Sweep) -> Result<Status> {
    let template = load_scenario(&args.common)?;
    let spec = sweep_spec(&args, kind);
    let rows = match kind {
        Sweep::Velocity => experiment::sweep_velocity(&spec, &template)?,
        Sweep::Vehicles => experiment::sweep_vehicles(&spec, &template)?,
    };
    let out = args.common.out.as_deref();
    let name = match kind {
        Sweep::Velocity => "sweep_velocity",
        Sweep::Vehicles => "sweep_vehicles",
    };

    let mut w = csv_writer(out, name)?;
    match kind {
        Sweep::Velocity => {
            let n = template.num_vehicles();
            let header: Vec<String> = ["avg_v", "operator", "trial"]
                .into_iter()
                .map(String::from)
                .chain(objective_header(n))
                .chain(numbered("kindex", n))
                .chain(["kindex_avg".to_string()])
                .collect();
            w.write_record(&header)?;
            for row in &rows {
                let mut rec = vec![fmt(row.value), row.operator.clone(), row.trial.to_string()];
                match &row.outcome {
                    Ok(e) => {
                        rec.extend(e.windows.as_slice().iter().chain(&e.deviations).map(|x| fmt(*x)));
                        rec.push(fmt(e.age));
                        rec.extend(e.kindex.iter().map(|x| fmt(*x)));
                        rec.push(fmt(e.kindex_avg));
                    }
                    Err(_) => rec.resize(header.len(), String::new()),
                }
                w.write_record(&rec)?;
            }
        }
        Sweep::Vehicles => {
            w.write_record(["num_vehicles", "operator", "trial", "kindex_avg", "max_fk", "fage"])?;
            for row in &rows {
                let mut rec = vec![fmt(row.value), row.operator.clone(), row.trial.to_string()];
                match &row.outcome {
                    Ok(e) => rec.extend([fmt(e.kindex_avg), fmt(e.max_deviation()), fmt(e.age)]),
                    Err(_) => rec.resize(6, String::new()),
                }
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    write_summary(&rows, out, name)?;

    let failed: Vec<&SweepRow> = rows.iter().filter(|r| r.outcome.is_err()).collect();
    for r in &failed {
        log::error!("value {} operator {} trial {}: {}", r.value, r.operator, r.trial, r.outcome.as_ref().unwrap_err());
    }
    Ok(if failed.is_empty() { Status::Complete } else { Status::Partial(failed.len()) })
}

/// Mean and sample standard deviation per (value, operator), to a
/// `_summary.csv` file with `--out` and to stderr otherwise.
fn write_summary(rows: &[SweepRow], out: Option<&Path>, name: &str) -> Result<()> {
    let mut groups: Vec<(f64, &str, Vec<&Evaluated>)> = Vec::new();
    for row in rows {
        let pos = groups.iter().position(|g| g.0 == row.value && g.1 == row.operator);
        let idx = pos.unwrap_or_else(|| {
            groups.push((row.value, &row.operator, Vec::new()));
            groups.len() - 1
        });
        if let Ok(e) = &row.outcome {
            groups[idx].2.push(e);
        }
    }
    let header = [
        "value",
        "operator",
        "runs",
        "max_fk_mean",
        "max_fk_std",
        "fage_mean",
        "fage_std",
        "kindex_avg_mean",
        "kindex_avg_std",
    ];
    let records: Vec<Vec<String>> = groups
        .iter()
        .map(|(value, op, evals)| {
            let stat = |f: &dyn Fn(&Evaluated) -> f64| mean_std(&evals.iter().map(|e| f(e)).collect::<Vec<_>>());
            let (fk, fk_sd) = stat(&|e| e.max_deviation());
            let (age, age_sd) = stat(&|e| e.age);
            let (k, k_sd) = stat(&|e| e.kindex_avg);
            vec![
                fmt(*value),
                op.to_string(),
                evals.len().to_string(),
                fmt(fk),
                fmt(fk_sd),
                fmt(age),
                fmt(age_sd),
                fmt(k),
                fmt(k_sd),
            ]
        })
        .collect();
    if out.is_some() {
        let mut w = csv_writer(out, &format!("{name}_summary"))?;
        w.write_record(header)?;
        for r in &records {
            w.write_record(r)?;
        }
        w.flush()?;
    } else {
        eprintln!(
            "{:>8} {:>10} {:>5} {:>12} {:>10} {:>12}",
            "value", "operator", "runs", "max_fk", "fage", "kindex_avg"
        );
        for (g, r) in groups.iter().zip(&records) {
            let num = |i: usize| r[i].parse::<f64>().unwrap_or(f64::NAN);
            eprintln!("{:>8} {:>10} {:>5} {:>12.6} {:>10.6} {:>12.6}", g.0, g.1, g.2.len(), num(3), num(5), num(7));
        }
    }
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<Status> {
    let scenario = load_scenario(&args.common)?;
    let spec = SweepSpec {
        values: vec![0.0],
        trials: args.trials,
        operators: args.operator.clone(),
        optimizer: optimizer_config(&args.optimizer),
        master_seed: args.optimizer.seed,
        ..Default::default()
    };
    let reports = experiment::compare_operators(&spec, &scenario)?;
    if reports.is_empty() {
        return Err(ConfigError("no operator could be run".into()).into());
    }
    let out = args.common.out.as_deref();
    let mut w = csv_writer(out, "compare_operators")?;
    w.write_record(["operator", "trial", "generation", "hv", "elapsed_s"])?;
    for r in &reports {
        for (g, (hv, t)) in r.hv.per_generation_hv.iter().zip(&r.elapsed).enumerate() {
            w.write_record([r.operator.to_string(), r.trial.to_string(), g.to_string(), fmt(*hv), fmt(*t)])?;
        }
    }
    w.flush()?;

    let summary: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.operator.to_string(),
                r.trial.to_string(),
                r.hv.per_generation_hv.last().map_or(String::new(), |x| fmt(*x)),
                r.hv.converged_at.map_or(String::new(), |g| g.to_string()),
                r.elapsed.last().map_or(String::new(), |x| fmt(*x)),
            ]
        })
        .collect();
    if out.is_some() {
        let mut w = csv_writer(out, "compare_operators_summary")?;
        w.write_record(["operator", "trial", "final_hv", "converged_at", "elapsed_s"])?;
        for s in &summary {
            w.write_record(s)?;
        }
        w.flush()?;
    } else {
        eprintln!("{:>10} {:>5} {:>10} {:>10} {:>10}", "operator", "trial", "final_hv", "converged", "elapsed_s");
        for s in &summary {
            let conv = if s[3].is_empty() { "-" } else { &s[3] };
            eprintln!(
                "{:>10} {:>5} {:>10.6} {:>10} {:>10.3}",
                s[0],
                s[1],
                s[2].parse::<f64>()?,
                conv,
                s[4].parse::<f64>()?
            );
        }
    }
    Ok(Status::Complete)
}

/// Objective columns of an archive CSV: `fk*`/`fage` when present.
fn read_archive(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let mut cols: Vec<usize> =
        headers.iter().enumerate().filter(|(_, h)| h.starts_with("fk") || *h == "fage").map(|(i, _)| i).collect();
    if cols.is_empty() {
        cols = (0..headers.len()).collect();
    }
    let mut points = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let p = cols
            .iter()
            .map(|&c| {
                let field = rec.get(c).unwrap_or("");
                field.trim().parse::<f64>().map_err(|_| {
                    ConfigError(format!(
                        "{}: row {} column {:?}: not a number: {field:?}",
                        path.display(),
                        line + 1,
                        &headers[c]
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        points.push(p);
    }
    if points.is_empty() {
        return Err(ConfigError(format!("{}: archive has no rows", path.display())).into());
    }
    Ok(points)
}

pub fn hv(args: HvArgs) -> Result<Status> {
    let points = read_archive(&args.archive)?;
    let dim = points[0].len();
    let (points, reference) = if args.reference == "auto" {
        let norm = Normalizer::from_sets([points.as_slice()]).expect("archive is nonempty");
        let reference = norm.reference();
        (points.iter().map(|p| norm.apply(p)).collect::<Vec<_>>(), reference)
    } else {
        let reference =
            args.reference.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(
                |_| ConfigError(format!("--ref must be `auto` or comma-separated numbers, got {:?}", args.reference)),
            )?;
        if reference.len() != dim {
            return Err(ConfigError(format!(
                "--ref has {} values but the archive has {dim} objectives",
                reference.len()
            ))
            .into());
        }
        (points, reference)
    };
    let hv = metrics::hypervolume(&points, &reference);
    if hv.dropped > 0 {
        log::warn!("{} points outside the reference box were ignored", hv.dropped);
    }
    println!("{}", hv.value);
    Ok(Status::Complete)
}
